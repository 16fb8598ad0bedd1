import java.io.FileReader;

public class ReadQuota {
    public static void main(String[] args) {
        String path = args[0];
        try {
            FileReader reader = new FileReader(path);
        } catch (FileNotFoundException ex) {
            System.err.println("Missing file: " + ex.getMessage());
            ex.printStackTrace();
        }
        System.out.println("quota file opened: " + path);
    }
}
